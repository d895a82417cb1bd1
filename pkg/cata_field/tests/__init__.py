"""Tests package for cata_field."""
