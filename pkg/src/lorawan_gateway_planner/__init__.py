"""LoRaWAN Gateway Planner."""
