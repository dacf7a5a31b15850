"""Storage time scales: how long until a device is full or empty?
================================================================

The two storages of the reference building live on very different time
scales. The battery cycles within hours; the seasonal heat tank needs
weeks. These horizons are what make the choice of the prediction horizon
interesting in the first place: a look-ahead shorter than the tank's
charge duration cannot plan a full seasonal cycle.
"""

import seasonmpc as sm

# The reference devices. Self-discharge is given as percent per hour and
# stored as an hourly retention factor.
battery = sm.StorageParams(
    eta_ch=0.97, eta_dis=0.97,
    rho=sm.retention_from_self_discharge(0.01),
    e_min=0.0, e_max=49.0, p_ch_max=16.0, p_dis_max=10.0, e_init=0.0, e_end=0.0,
)
heat_tank = sm.StorageParams(
    eta_ch=0.78, eta_dis=0.78,
    rho=sm.retention_from_self_discharge(0.007),
    e_min=0.0, e_max=4640.0, p_ch_max=10.2, p_dis_max=9.18,
    e_init=3000.0, e_end=3000.0,
)

print("Leak-free durations (full charge, full discharge at rated power):")
for name, device in (("battery", battery), ("heat tank", heat_tank)):
    t_ch, t_dis = sm.storage_durations(device)
    print(f"  {name:>9}: charge {t_ch:7.2f} h   discharge {t_dis:7.2f} h")

print()
print("With self-discharge, charging fights the leak; the geometric")
print("recursion gives the exact crossing time:")
for name, device in (("battery", battery), ("heat tank", heat_tank)):
    total = sm.leaky_fill_horizon(device)
    print(f"  {name:>9}: full cycle {total:8.2f} h = {total / 24.0:5.2f} days")

print()
print("The heat tank's cycle of roughly 42 days is the classic choice for")
print("a rolling-horizon look-ahead: long enough that the tank can plan a")
print("complete charge and discharge inside one window.")

# The leak also caps what is reachable at all. Shrink the charger and the
# steady state drops below the capacity:
slow = sm.StorageParams(0.78, 0.78, 0.995, 0.0, 4640.0, 10.2, 9.18, 0.0)
try:
    sm.leaky_fill_horizon(slow)
except sm.UnreachableCapacityError as exc:
    print()
    print(f"At 0.5%/h leakage the tank can never fill: {exc}")
