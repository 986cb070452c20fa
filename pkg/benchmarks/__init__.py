"""Performance and correctness-sweep benchmarks for the retrieval toolkit."""
