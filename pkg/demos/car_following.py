"""
Car following against a red light
=================================

A single vehicle enters 100 m upstream of the stop line at free-flow speed
while the signal stays red.  The light acts as a standing virtual leader, so
the intelligent driver model brings the car smoothly to rest at the line.
"""

from atsc.sim import LANES, Color, DemandProfile, Movement, Simulation, Vehicle

sim = Simulation(DemandProfile.uniform(0.0), seed=0)
lane = LANES[1]  # north approach, inner through lane
car = Vehicle(0, lane, Movement.THROUGH, pos=sim.geometry.lane_length - 100.0, speed=14.0)
sim.snapshot.lanes[1].append(car)

all_red = [Color.RED] * len(LANES)
print(" t   distance  speed   accel")
for t in range(30):
    sim.step(all_red)
    gap = sim.geometry.lane_length - car.pos
    print(f"{t + 1:2d}  {gap:8.2f}  {car.speed:5.2f}  {car.accel:6.2f}")

# the car never crosses on red
assert car.pos <= sim.geometry.lane_length
