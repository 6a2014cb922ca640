"""(c) 2025, hybrid-sape authors.

Configuration and logging setup."""
