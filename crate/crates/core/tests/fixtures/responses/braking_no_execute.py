class Braking_Decision:
    def __init__(self):
        pass

    def decide(self, ttc):
        if ttc < 1.0:
            return {'brake_force': 1.0}
        if ttc < 2.0:
            return {'brake_force': 2.0 - ttc}
        return {'brake_force': 0.0}
