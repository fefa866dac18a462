"""Knowledge-based QA transfer-learning toolkit.

Pipeline pieces: dataset/KB handling, domain entity tagging, back-translation
augmentation, trainable knowledge retrieval with pretrain/finetune transfer,
fusion-based answer prediction, and an experiment harness with metrics and
report emission.
"""

__version__ = "0.1.0"
