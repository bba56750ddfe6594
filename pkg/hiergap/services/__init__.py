# Construction and certification services
