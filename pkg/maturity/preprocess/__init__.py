# Preprocessing Module
