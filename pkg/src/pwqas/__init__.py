"""Progressive-widening MCTS for quantum architecture search."""
