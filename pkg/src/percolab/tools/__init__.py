"""Utility tools for percolab - run tracking and manifests."""
