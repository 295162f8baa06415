"""Chart-note summarization toolkit: corpora, section parsing, toy LSG seq2seq, ROUGE."""

__version__ = "0.1.0"
