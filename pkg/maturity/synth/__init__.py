# Synthetic Data Module
