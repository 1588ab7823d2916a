"""Sub-trajectory similarity join over an obfuscated spatio-temporal index."""
