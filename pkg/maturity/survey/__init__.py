# Survey Module
