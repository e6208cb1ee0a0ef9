"""kbforge: feature-ranked knowledge bases and detectors for IoT DDoS flows."""

__version__ = "0.1.0"
