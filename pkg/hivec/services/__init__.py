"""hivec services - channel, cost, scheduling, environment and experiment runner."""
