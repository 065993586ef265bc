"""One-class detection of abnormal collective states from optical flow."""

__version__ = "0.1.0"
