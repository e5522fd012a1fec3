"""Tests for treeirs."""
