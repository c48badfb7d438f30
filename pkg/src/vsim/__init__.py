"""vsim: a software SIM in a simulated TEE.

Subscriber profiles are obtained from a provisioner over an anonymously
attested secure channel, sealed to untrusted storage under a key bound to
the device and the enclave measurement, and used to answer 5G AKA
challenges. The package also ships the provisioner service and a
serving-network simulator, so every protocol can be exercised end to end
on one machine.
"""

__version__ = "0.1.0"
