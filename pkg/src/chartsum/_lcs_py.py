"""Pure-Python LCS kernel, the fallback twin of the compiled module in _lcs.pyx."""


def lcs_length_ids(a, b) -> int:
    """Longest-common-subsequence length of two integer sequences (rolling-row DP)."""
    a = list(a)
    b = list(b)
    if not a or not b:
        return 0
    if len(b) > len(a):
        a, b = b, a  # keep the DP row on the shorter side
    m = len(b)
    row = [0] * (m + 1)
    for x in a:
        prev = 0
        for j in range(1, m + 1):
            cur = row[j]
            if x == b[j - 1]:
                row[j] = prev + 1
            elif row[j - 1] > cur:
                row[j] = row[j - 1]
            prev = cur
    return row[m]
