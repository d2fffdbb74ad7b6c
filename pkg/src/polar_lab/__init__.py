"""Short-blocklength polar coding toolkit."""
