"""hivec test suite."""
