"""Universal word segmentation: BiGRU-CRF tagging of raw text into UD words."""

__version__ = "0.1.0"
