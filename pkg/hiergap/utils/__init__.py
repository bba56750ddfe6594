# Logging, serialization and random streams
