"""Existence criterion and variational solver for Mabuchi metrics on Fano group compactifications."""
