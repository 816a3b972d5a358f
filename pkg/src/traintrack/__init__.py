"""Train track maps of free group automorphisms."""
