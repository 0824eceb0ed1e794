#!/usr/bin/env python3
"""
Test script for the TxOP Sharing Simulator

This script tests various components of the system to ensure everything is working correctly.
"""

import os
import sys
import logging
import tempfile
from typing import Dict, Any

# Add src directory to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "src"))

from src.config import validate_environment, get_batch_plan, parse_seeds
from src.analytic_model import ALL_PROTOCOLS, AnalyticParams, success_probability
from src.progress_tracker import ProgressTracker
from src.batch_processor import run_scenario
from src.traffic_scenarios import calibration_preset


def test_environment() -> Dict[str, Any]:
    """Test environment configuration"""
    print("Testing environment configuration...")

    validation = validate_environment()

    if validation["valid"]:
        print("✓ Environment configuration is valid")
        if validation["using_defaults"]:
            print("  Using default values for:")
            for default in validation["using_defaults"]:
                print(f"    - {default}")
    else:
        print("✗ Environment configuration is invalid")
        print("  Problems:")
        for problem in validation["problems"]:
            print(f"    - {problem}")

    return validation


def test_analytic_model() -> bool:
    """Test the analytic model at its default parameters"""
    print("\nTesting analytic model...")

    try:
        params = AnalyticParams()
        for protocol in ALL_PROTOCOLS:
            result = success_probability(protocol, params)
            print(f"  {protocol.value:<8} p_success = {result.p_success:.6f}")
        print("✓ Analytic model evaluated")
        return True

    except Exception as e:
        print(f"✗ Analytic model error: {e}")
        return False


def test_progress_tracker() -> bool:
    """Test progress tracking functionality"""
    print("\nTesting progress tracker...")

    try:
        with tempfile.TemporaryDirectory() as tmp:
            tracker = ProgressTracker(os.path.join(tmp, "progress.json"))

            session_id = tracker.start_session()
            print(f"✓ Progress tracker initialized (Session: {session_id})")

            tracker.mark_completed("edca/obss-light/ac0", 1, {"cdf": "x.csv"})
            stats = tracker.get_statistics()
            print(f"✓ Progress tracking working (Runs completed: {stats['runs_completed']})")

        return True

    except Exception as e:
        print(f"✗ Progress tracker error: {e}")
        return False


def test_batch_calculation() -> bool:
    """Test batch plan calculations"""
    print("\nTesting batch calculations...")

    try:
        plan = get_batch_plan(["edca", "trigger", "sharing"], parse_seeds("1-5"), 4)

        print(f"✓ Batch calculation successful:")
        print(f"  Total scenarios: {plan['total_scenarios']}")
        print(f"  Total runs: {plan['total_runs']}")
        print(f"  Workers: {plan['workers']}")
        print(f"  Worker waves: {plan['worker_waves']}")

        return True

    except Exception as e:
        print(f"✗ Batch calculation error: {e}")
        return False


def test_short_simulation() -> bool:
    """Test a one second single-station simulation"""
    print("\nTesting simulator...")

    try:
        result = run_scenario(calibration_preset(sim_duration_s=1.0))
        print(f"✓ Simulation finished: {result.collector.sample_count} packets delivered")
        return result.collector.sample_count > 0

    except Exception as e:
        print(f"✗ Simulation error: {e}")
        return False


def run_comprehensive_test() -> None:
    """Run all tests and provide summary"""
    print("=" * 60)
    print("TxOP Sharing Simulator - Comprehensive Test Suite")
    print("=" * 60)

    # Configure minimal logging for tests
    logging.basicConfig(level=logging.ERROR)

    tests = [
        ("Environment Configuration", test_environment),
        ("Analytic Model", test_analytic_model),
        ("Progress Tracker", test_progress_tracker),
        ("Batch Calculations", test_batch_calculation),
        ("Short Simulation", test_short_simulation),
    ]

    results = {}

    for test_name, test_func in tests:
        try:
            if test_name == "Environment Configuration":
                result = test_func()
                results[test_name] = result["valid"]
            else:
                results[test_name] = test_func()
        except Exception as e:
            print(f"✗ {test_name} failed with exception: {e}")
            results[test_name] = False

    # Print summary
    print("\n" + "=" * 60)
    print("TEST SUMMARY")
    print("=" * 60)

    passed = sum(1 for result in results.values() if result)
    total = len(results)

    for test_name, result in results.items():
        status = "PASS" if result else "FAIL"
        print(f"{test_name:<30} {status}")

    print(f"\nOverall: {passed}/{total} tests passed")

    if passed == total:
        print("\n🎉 All tests passed! The system is ready to use.")
        print("\nNext steps:")
        print("1. Run: python main.py analytic-sweep-distance")
        print("2. Try: python main.py simulate --scenario sharing/obss-light/ac0 --duration-s 2")
        print("3. Full matrix: python main.py batch")
        print("4. Unit tests: pytest")
    else:
        print("\n⚠️  Some tests failed. Please check the configuration.")

        if not results.get("Environment Configuration", False):
            print("\n💡 Make sure to:")
            print("1. Copy .env.example to .env")
            print("2. Point SIM_OUTPUT_DIR at a writable directory")


if __name__ == "__main__":
    run_comprehensive_test()
