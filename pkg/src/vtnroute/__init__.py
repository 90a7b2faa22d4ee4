"""Tenant routing updates with decoupled search and optimization."""
