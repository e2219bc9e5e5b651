#!/usr/bin/env python3
"""
Setup Verification Script
Confirms the numerical stack, configuration and a small PTC fit work on this machine
"""

import sys
from importlib import metadata
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

# Import name -> distribution name
REQUIRED_PACKAGES = {
    "numpy": "numpy",
    "scipy": "scipy",
    "pydantic": "pydantic",
    "pydantic_settings": "pydantic-settings",
    "dotenv": "python-dotenv",
    "pytest": "pytest",
}

PACKAGE_MODULES = [
    "tensor_core.py",
    "histogram.py",
    "cp_apr.py",
    "estimators.py",
    "samplers.py",
    "experiment.py",
    "cli.py",
]


def print_status(component: str, status: bool, message: str = ""):
    """Print status with emoji"""
    print(f"{'✅' if status else '❌'} {component}")
    if message:
        print(f"   {message}")


def check_python_version():
    """Python 3.11 or newer"""
    found = ".".join(str(part) for part in sys.version_info[:3])
    ok = sys.version_info >= (3, 11)
    print_status("Python Version", ok, found if ok else f"{found} found, 3.11+ required")
    return ok


def check_dependencies():
    """Every package from requirements.txt imports"""
    missing = []
    for module_name, dist_name in REQUIRED_PACKAGES.items():
        try:
            __import__(module_name)
        except ImportError:
            missing.append(dist_name)
            print_status(f"Package: {dist_name}", False, "Not installed")
            continue
        try:
            version = metadata.version(dist_name)
        except metadata.PackageNotFoundError:
            version = "unknown version"
        print_status(f"Package: {dist_name}", True, version)
    return not missing


def check_env_file():
    """Every PTC_* key in .env is documented in .env.example (no .env means defaults)"""
    example = ROOT / ".env.example"
    env_path = ROOT / ".env"

    if not example.exists():
        print_status(".env.example", False, "Missing from the repository root")
        return False
    if not env_path.exists():
        print_status(".env File", True, "Not present; built-in defaults apply")
        return True

    def keys(path: Path) -> set[str]:
        found = set()
        for line in path.read_text().splitlines():
            line = line.strip()
            if line and not line.startswith("#") and "=" in line:
                found.add(line.split("=", 1)[0].strip())
        return found

    unknown = sorted(
        k for k in keys(env_path) - keys(example) if k.startswith("PTC_") and not k.startswith("PTC_EXP_")
    )
    print_status(
        ".env File",
        not unknown,
        f"Unknown keys: {', '.join(unknown)}" if unknown else "All keys documented",
    )
    return not unknown


def check_settings():
    """Settings load from the environment"""
    try:
        from ptc_entropy.settings import load_settings

        loaded = load_settings()
    except Exception as e:
        print_status("Settings", False, str(e))
        return False
    print_status(
        "Settings",
        True,
        f"Enumeration budget {loaded.enumeration_budget:,}, {loaded.max_parallel_jobs} parallel jobs",
    )
    return True


def check_estimator():
    """A rank-1 fit on a uniform square recovers an entropy near 0"""
    try:
        from ptc_entropy.pipeline import create_dependencies, estimate_entropy
        from ptc_entropy.samplers import DistributionSpec, sample

        x = sample(DistributionSpec.uniform_cube(2), 500, seed=0)
        record = estimate_entropy(x, "ptc", create_dependencies(), bins_per_dim=5)
    except Exception as e:
        print_status("Estimator", False, str(e))
        return False
    print_status("Estimator", True, f"Uniform [0,1]^2 PTC entropy: {record.estimate:.4f} (truth 0)")
    return True


def check_project_structure():
    """Package modules and the tests directory are in place"""
    missing = [name for name in PACKAGE_MODULES if not (ROOT / "ptc_entropy" / name).is_file()]
    if not (ROOT / "tests").is_dir():
        missing.append("tests/")
    print_status("Project Structure", not missing, f"Missing: {', '.join(missing)}" if missing else "")
    return not missing


def main():
    """Run all checks"""
    banner = "=" * 60
    print(banner)
    print("  PTC Entropy - Setup Verification")
    print(banner)
    print()

    checks = [
        ("Python Version", check_python_version),
        ("Dependencies", check_dependencies),
        ("Project Structure", check_project_structure),
        (".env File", check_env_file),
        ("Settings", check_settings),
        ("Estimator", check_estimator),
    ]
    results = {name: check() for name, check in checks}
    failed = [name for name, ok in results.items() if not ok]

    print()
    print(banner)
    print(f"  {len(results) - len(failed)}/{len(results)} checks passed")
    print(banner)
    print()

    if not failed:
        print("✅ Ready. Try:")
        print("   python main.py estimate --family gaussian --dim 2 --s 5000 --method knn")
        print("   python main.py experiment --preset knn_sanity --out results/knn.csv")
        return 0

    print(f"❌ Failed: {', '.join(failed)}")
    if "Dependencies" in failed:
        print("   • pip install -r requirements.txt")
    if ".env File" in failed or "Settings" in failed:
        print("   • Compare .env with .env.example")
    return 1


if __name__ == "__main__":
    sys.exit(main())
