"""DoF accounting and delayed-CSI scheme simulation for multi-hop X networks."""
