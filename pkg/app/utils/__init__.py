"""(c) 2025, hybrid-sape authors.

Utility functions and the shared exception hierarchy."""
