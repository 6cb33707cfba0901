"""NoLoCo simulator - low-communication decentralized training at desk scale."""

__version__ = "0.1.0"
