"""HTTP service wrapping the core package, plus the request/response schemas
shared with the thin-client CLI."""
