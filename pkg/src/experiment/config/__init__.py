"""
Configuration module for the experiment package.
Contains the environment-backed experiment configuration and the CLI parser.
"""
