"""Model engines behind the service endpoints."""
