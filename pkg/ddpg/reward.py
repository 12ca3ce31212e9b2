"""
Per-layer reward of the channel-estimation MDP
"""


def compute_reward(nmse_prev: float, nmse_cur: float, eta_pen: float, halt_term: float,
                   lambda_halt: float) -> float:
    """r = (NMSE_(t-1) - NMSE_t - eta) - lambda_halt * halt_term"""
    return (nmse_prev - nmse_cur - eta_pen) - lambda_halt * halt_term
