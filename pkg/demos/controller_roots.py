"""Closed-loop roots of the PI step-size recursion for a few gain choices.

    python3 demos/controller_roots.py
"""
from dtsim import char_roots

GAINS = {"default PI": (0.3, 0.4), "integral only": (1.0, 0.0), "aggressive PI": (0.9, 0.8)}


def main():
    for name, (ki, kp) in GAINS.items():
        print(name)
        for K in (4, 15, 45):
            l1, l2 = char_roots(K, ki / K, kp / K)
            print(f"  K={K:2d}  roots {l1:.4f}, {l2:.4f}  max modulus {max(abs(l1), abs(l2)):.4f}")

if __name__ == "__main__":
    main()
