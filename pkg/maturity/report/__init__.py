# Reporting Module
