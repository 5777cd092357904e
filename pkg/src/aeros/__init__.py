"""Safety-assurance harness for emergent behaviour in a robot-swarm cloakroom."""

__version__ = "0.1.0"
