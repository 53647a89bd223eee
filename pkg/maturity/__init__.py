# Insider Threat Maturity Pipeline

__version__ = "1.0.0"
