"""Black-box scenario-based safety testing: almost-safe sets, aggressiveness, no-free-lunch bench."""

__version__ = "0.1.0"
