# Explainability Module
