"""(c) 2025, hybrid-sape authors.

Hybrid statistical automatic post-editing.
"""

__version__ = "0.1.0"
