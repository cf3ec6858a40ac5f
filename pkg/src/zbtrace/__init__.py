"""Zigbee traffic analysis: capture decoding, window features, device
classification and quantized feature storage."""

__version__ = "0.1.0"
