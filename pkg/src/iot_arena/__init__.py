"""Deterministic discrete-event arena for comparing IoT data-dissemination protocols.

The package simulates ten protocol variants (NDN pull, HoPP, Interest
Notification, CoAP PUT/GET in confirmable and non-confirmable mode, CoAP
Observe, MQTT-SN QoS 0/1) over a lossy low-power wireless link model and
computes comparative metrics (loss, time-to-content, goodput, link stress,
energy, control overhead) from the resulting event traces.
"""

__version__ = "0.1.0"
