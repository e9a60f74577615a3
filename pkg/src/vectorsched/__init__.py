"""Timing optimisation of mosquito-control interventions against dengue risk."""
