"""Conditional independence testing for categorical and ordinal data."""
