"""Open-loop TCP load generator and CPU-burning echo server."""
