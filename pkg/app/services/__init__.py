"""(c) 2025, hybrid-sape authors.

Alignment, rule extraction, language modelling, decoding, tuning and
evaluation services."""
