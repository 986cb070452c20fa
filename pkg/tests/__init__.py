"""Test suite for the legal retrieval toolkit."""
