# Random Forest Module
