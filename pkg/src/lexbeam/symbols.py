"""Reserved symbols shared across subword models, LMs and the decoder."""

SOS = "<sos>"
EOS = "<eos>"
UNK = "<unk>"
INCOMPLETE = "<incomplete>"

DEFAULT_MARKER = "_"
