"""Event-triggered safety-critical control with input-to-state safe barrier functions."""
