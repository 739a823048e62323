"""hivec agents - SAC policy, DQN and heuristic baselines, training loops."""
