"""
Script to verify an nhtherm setup
Run this to check that the numerical stack and a small qubit run work
"""

import sys
import tempfile
from pathlib import Path

print("=" * 60)
print("nhtherm Setup Verification")
print("=" * 60)
print()

# Test 1: Check Python version
print("1. Checking Python version...")
if sys.version_info >= (3, 10):
    print(f"   ✓ Python {sys.version_info.major}.{sys.version_info.minor} (OK)")
else:
    print(f"   ✗ Python {sys.version_info.major}.{sys.version_info.minor} (Need 3.10+)")
    sys.exit(1)

# Test 2: Import dependencies
print("\n2. Checking dependencies...")

dependencies = {
    "numpy": "NumPy",
    "scipy": "SciPy",
    "pydantic": "Pydantic",
    "dotenv": "python-dotenv",
    "pytest": "pytest",
}

failed = []
for module, name in dependencies.items():
    try:
        __import__(module)
        print(f"   ✓ {name}")
    except ImportError:
        print(f"   ✗ {name} (not installed)")
        failed.append(name)

if failed:
    print(f"\n   Missing dependencies: {', '.join(failed)}")
    print("   Run: pip install -r requirements.txt")
    sys.exit(1)

# Test 3: Eigensystem of the reference qubit
print("\n3. Testing biorthogonal eigensystem...")
try:
    import numpy as np

    from models import ModelSpec, model_eigensystem

    eig = model_eigensystem(ModelSpec.qubit(h_x=1.0, h_y=0.5))
    overlap = eig.left_vectors.conj().T @ eig.right_vectors
    if np.allclose(eig.energies.real, [-np.sqrt(0.75), np.sqrt(0.75)]) and np.allclose(overlap, np.eye(2)):
        print(f"   ✓ Energies {eig.energies.real[0]:+.6f}, {eig.energies.real[1]:+.6f}")
    else:
        print("   ✗ Qubit eigensystem not as expected")

except Exception as e:
    print(f"   ✗ Eigensystem error: {e}")

# Test 4: Short BTE run
print("\n4. Testing a BTE run...")
try:
    from config import SimulationConfig
    from experiments import cmd_evolve

    with tempfile.TemporaryDirectory() as tmp:
        config = SimulationConfig.model_validate({
            "bath": {"gamma0": 0.5},
            "output": {"directory": str(Path(tmp) / "evolve")},
        })
        code, summary = cmd_evolve(config)
        if code == 0 and summary["status"] == "Thermalized":
            print(f"   ✓ Thermalized (V_lr = {summary['final_variance']['lr']:.2e})")
        else:
            print(f"   ⚠ Run finished with status {summary['status']} (exit {code})")

except Exception as e:
    print(f"   ✗ Evolution error: {e}")

# Summary
print("\n" + "=" * 60)
print("Setup Verification Complete!")
print("=" * 60)
print()
print("Next steps:")
print("1. Run the tests: pytest -m 'not slow'")
print("2. Try: ./nhtherm sectors")
print("3. Scan: ./nhtherm scan --config chain.json --hy 0:0.5:11 --hz 0.5:1.5:11")
print()
