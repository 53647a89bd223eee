# Artifact Storage Module
