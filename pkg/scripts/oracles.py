"""Independent high-precision oracles for the frozen constants in tests/.

Nothing here imports the package: every value is recomputed from the closed
forms with mpmath (50 digits) or exact integer arithmetic.
Run: python3 scripts/oracles.py
"""
import mpmath as mp

mp.mp.dps = 50


def F(x, y, lam=2, t=1):
    # p = 2 kernel: angle arctan(lam^2t tan x) on the branch of x, radius y e(x)
    lam = mp.mpf(lam)
    h = mp.atan(lam ** (2 * t) * mp.tan(x))
    e = mp.sqrt(lam ** (-2 * t) * mp.cos(x) ** 2 + lam ** (2 * t) * mp.sin(x) ** 2)
    return h, y * e


def ws_frames(w, s):
    su = (w * mp.cos(w), -s * mp.cos(w) + s * w * mp.sin(w))
    ss = (-w * mp.sin(w), s * mp.sin(w) + s * w * mp.cos(w))
    return su, ss


def line_angle(a, b):
    cross = abs(a[0] * b[1] - a[1] * b[0])
    dot = abs(a[0] * b[0] + a[1] * b[1])
    return mp.atan2(cross, dot)


def n_hat(x, y, eps_plus, eps_minus, r_minus, r_plus, lam=2):
    # p = 2: R- sits around x = pi/2 (and 3pi/2); entry (x, y) near x = 0
    n = 0
    while True:
        n += 1
        x, y = F(x, y, lam)
        off = x - mp.pi / 2
        if abs(off) < eps_minus and off != 0 and r_minus <= y < r_plus:
            return n, x, y


def expansion_min_L0(lam, beta):
    # min over |t| <= beta of |L0 (1, t)| / |(1, t)|, L0 = diag(lam^2, 1/lam)
    lam = mp.mpf(lam)
    f = lambda t: mp.sqrt((lam**4 + t * t / lam**2) / (1 + t * t))
    return min(f(mp.mpf(beta)), f(0))


def main():
    h, y = F(mp.pi / 4, mp.mpf("0.1"))
    print("F(pi/4, 0.1)           ", mp.nstr(h, 20), mp.nstr(y, 20))
    su, ss = ws_frames(mp.mpf("0.01"), mp.mpf(1))
    print("ws line angle (0.01, 1)", mp.nstr(line_angle(su, ss), 20))
    print("x0 = atan(1/2)         ", mp.nstr(mp.atan(mp.mpf(1) / 2), 20))
    d = mp.diff(lambda t: F(t, 0)[0], mp.atan(mp.mpf(1) / 2))
    print("h'(x0)                 ", mp.nstr(d, 20))
    print("L0 expansion_min C(0.1)", mp.nstr(expansion_min_L0(2, "0.1"), 20))
    n, xe, ye = n_hat(mp.mpf("0.04"), mp.mpf("0.3"), 0.05, 0.05, 0.2, 0.4)
    print("n_hat(0.04, 0.3)       ", n, mp.nstr(xe, 20), mp.nstr(ye, 20))
    phi = (mp.sqrt(5) - 1) / 2
    print("theta_u                ", mp.nstr(mp.atan2(phi, 1), 20))
    lam_a = (3 + mp.sqrt(5)) / 2
    print("log lam_A              ", mp.nstr(mp.log(lam_a), 20))
    # argmax of e'(x) on (0, pi/2) for lam = 2
    de = lambda x: mp.diff(lambda u: F(u, 1)[1], x)
    xm = mp.findroot(lambda x: mp.diff(de, x), 0.46)
    print("argmax e'              ", mp.nstr(xm, 20))
    # torus A(0.1, 0.2) exactly
    from fractions import Fraction as Fr
    a, b = Fr(1, 10), Fr(2, 10)
    print("A(0.1, 0.2)            ", (2 * a + b) % 1, (a + b) % 1)


if __name__ == "__main__":
    main()
