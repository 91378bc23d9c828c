#!/usr/bin/env python3
"""
Experiment Spec Generator

Writes the bundled JSON experiment documents into experiment_specs/.
"""

import json
import os

SPEC_DIR = 'experiment_specs'


def scenario(L, N, K, tau_p, trials=2000, seed=1):
    """Scenario block with the default geometry, powers and pathloss."""
    return {
        'L': L, 'N': N, 'K': K, 'tau_p': tau_p,
        'tau_c': 200,
        'area_m': 1000.0,
        'p_max_W': 0.1,
        'noise_dBm': -94.0,
        'pathloss': {'offset_dB': -30.5, 'exponent': 3.67, 'shadow_sigma_dB': 4.0},
        'v_percent': 85.0,
        'seed': seed,
        'trials': trials,
    }


def write_spec(name, spec):
    """Write one spec file and return its path."""
    path = os.path.join(SPEC_DIR, f'{name}.json')
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(spec, f, indent=2)
        f.write('\n')
    return path


def create_validation_spec():
    # closed forms against 10^4 Monte-Carlo trials
    return write_spec('validation', {
        'scenario': scenario(L=20, N=10, K=8, tau_p=5, trials=10000),
        'schemes': ['FZF', 'PFZF', 'PWPFZF'],
        'drops': 3,
        'output_path': 'runs/validation.csv',
    })


def create_scheme_comparison_spec():
    return write_spec('scheme_comparison', {
        'scenario': scenario(L=50, N=8, K=10, tau_p=7),
        'schemes': ['MR', 'FZF', 'PFZF', 'PWPFZF', 'LRZF'],
        'drops': 50,
        'output_path': 'runs/scheme_comparison.csv',
    })


def create_ln_tradeoff_spec():
    # total antenna count L*N fixed at 800
    return write_spec('ln_tradeoff', {
        'scenario': scenario(L=100, N=8, K=10, tau_p=7, trials=1000),
        'schemes': ['MR', 'FZF', 'PFZF', 'PWPFZF'],
        'drops': 20,
        'sweep': {'parameter': 'N', 'values': [8, 10, 16, 20, 32, 40],
                  'couple': [{'parameter': 'L', 'product': 800}]},
        'output_path': 'runs/ln_tradeoff.csv',
    })


def create_pilot_length_spec():
    return write_spec('pilot_length', {
        'scenario': scenario(L=50, N=10, K=10, tau_p=5, trials=1000),
        'schemes': ['MR', 'FZF', 'PFZF', 'PWPFZF'],
        'drops': 20,
        'sweep': {'parameter': 'tau_p', 'values': [3, 5, 7, 9]},
        'output_path': 'runs/pilot_length.csv',
    })


def create_ap_density_spec():
    return write_spec('ap_density', {
        'scenario': scenario(L=50, N=8, K=10, tau_p=7, trials=1000),
        'schemes': ['MR', 'FZF', 'PFZF', 'PWPFZF'],
        'drops': 20,
        'sweep': {'parameter': 'L', 'values': [20, 40, 60, 80, 100]},
        'output_path': 'runs/ap_density.csv',
    })


def create_mlrzf_spec():
    # N = K grows with tau_p = K / 2
    return write_spec('mlrzf', {
        'scenario': scenario(L=16, N=16, K=16, tau_p=8),
        'schemes': ['mLRZF'],
        'drops': 5,
        'alpha': 0.8,
        'sweep': {'parameter': 'N', 'values': [16, 32, 64],
                  'couple': [{'parameter': 'K', 'scale': 1},
                             {'parameter': 'tau_p', 'scale': 0.5}]},
        'output_path': 'runs/mlrzf.csv',
    })


def create_power_control_specs():
    paths = []
    for mode in ('full', 'fractional'):
        paths.append(write_spec(f'power_control_{mode}', {
            'scenario': scenario(L=50, N=8, K=30, tau_p=7),
            'schemes': ['PWPFZF'],
            'power_mode': mode,
            'fractional_exponent': 1.0,
            'methods': ['closed-form'],
            'drops': 50,
            'output_path': f'runs/power_control_{mode}.csv',
        }))
    return paths


if __name__ == '__main__':
    os.makedirs(SPEC_DIR, exist_ok=True)

    print("Creating validation spec...")
    create_validation_spec()

    print("Creating scheme comparison spec...")
    create_scheme_comparison_spec()

    print("Creating L*N trade-off, pilot length and AP density sweeps...")
    create_ln_tradeoff_spec()
    create_pilot_length_spec()
    create_ap_density_spec()

    print("Creating mLRZF spec...")
    create_mlrzf_spec()

    print("Creating power control specs...")
    create_power_control_specs()

    print(f"All experiment specs written to {SPEC_DIR}/")
