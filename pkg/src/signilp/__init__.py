"""Learning readable traffic-sign rules with inductive logic programming."""

__version__ = "0.1.0"
