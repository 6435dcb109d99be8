"""
Power-based CO2 rates
=====================

Wheel power combines rolling resistance, aerodynamic drag, inertia and grade.
Engine power divides by the gearbox efficiency, and the CEP curve maps it to
an emission rate.  Braking and coasting sit on the idle rate.
"""

from atsc.emissions import CepCurve, EmissionParams, engine_power, vehicle_co2, wheel_power

params = EmissionParams()
curve = CepCurve()

print("speed  accel   wheel kW  engine kW   CO2 g/s")
for v, a in [(0, 0), (5, 1.5), (10, 0), (13.9, 0), (13.9, 1), (10, -2)]:
    w = wheel_power(v, a, params)
    print(f"{v:5.1f}  {a:5.1f}  {w / 1000:9.2f}  {engine_power(w, params.eta) / 1000:9.2f}"
          f"  {vehicle_co2(v, a, params, curve):8.3f}")

# %%
# A stop-and-go cycle: 10 s idling, accelerate to 13.9 m/s, cruise.
speeds = [0.0] * 10 + [min(13.9, 2.0 * k) for k in range(1, 8)] + [13.9] * 10
accels = [b - a for a, b in zip(speeds, speeds[1:] + speeds[-1:])]
grams = sum(vehicle_co2(v, a, params, curve) for v, a in zip(speeds, accels))
print(f"\nstop-and-go trip: {grams:.1f} g CO2 over {len(speeds)} s")
