"""Spatio-temporal corridor planning for multiple vehicles."""
