"""
Linear-quadratic kernel of the gain-matching loss: Lyapunov solves, the policy gain update and Kleinman's iteration.

The Lyapunov equation P A + A^T P = -M is solved through its Kronecker form, which is cheap for the state dimensions
used here and needs no Schur decomposition.
"""
import logging
from dataclasses import dataclass

import numpy as np


class ResonantSpectrumError(np.linalg.LinAlgError):
    """ A has eigenvalues l1, l2 with l1 + l2 = 0, so the Lyapunov operator is singular. """


class NotHurwitzError(ValueError):
    def __init__(self, iteration, message):
        super(NotHurwitzError, self).__init__(message)
        self.iteration = iteration


@dataclass(frozen=True, eq=False)
class LyapunovProblem:
    Ahat: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        Ahat = np.atleast_2d(np.asarray(self.Ahat, dtype=np.float64))
        M = np.atleast_2d(np.asarray(self.M, dtype=np.float64))
        assert Ahat.shape[0] == Ahat.shape[1] and M.shape == Ahat.shape, \
            f'Lyapunov data must be square and conformable, got A {Ahat.shape} and M {M.shape}.'
        object.__setattr__(self, 'Ahat', Ahat)
        object.__setattr__(self, 'M', (M + M.T) / 2)


def lyapunov_solve(problem: LyapunovProblem):
    """
    Unique symmetric P with P A + A^T P = -M.

    :raises ResonantSpectrumError: if the Kronecker system is singular or the solution misses the residual bound.
    """
    A, M = problem.Ahat, problem.M
    n = A.shape[0]
    eye = np.eye(n)
    operator = np.kron(eye, A.T) + np.kron(A.T, eye)
    try:
        if np.linalg.cond(operator) > 1e14:
            raise np.linalg.LinAlgError('ill-conditioned Lyapunov operator')
        vec = np.linalg.solve(operator, -M.reshape(-1, order='F'))
    except np.linalg.LinAlgError as e:
        raise ResonantSpectrumError(f'Lyapunov equation has no unique solution (resonant spectrum): {e}')

    P = vec.reshape(n, n, order='F')
    P = (P + P.T) / 2
    residual = np.linalg.norm(P @ A + A.T @ P + M)
    bound = 1e-10 * (np.linalg.norm(P) * np.linalg.norm(A) + np.linalg.norm(M))
    if residual > max(bound, 1e-300):
        raise ResonantSpectrumError(f'Lyapunov residual {residual:.3e} exceeds {bound:.3e} (resonant spectrum).')
    return P


def gain_update(P, B, R):
    """ K = -R^-1 B^T P. """
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    R = np.atleast_2d(np.asarray(R, dtype=np.float64))
    return -np.linalg.solve(R, B.T @ np.atleast_2d(P))


def closed_loop_value_matrix(A, B, Qhat, R, K):
    """
    P such that x^T P x is the quadratic part at the origin of the value of a policy with gain K there: with
    Ahat = A + B K, P Ahat + Ahat^T P = -(Qhat / 2 + K^T R K). None when Ahat is not Hurwitz.
    """
    K = np.atleast_2d(K)
    Ahat = A + B @ K
    if not is_hurwitz(Ahat):
        return None
    try:
        return lyapunov_solve(LyapunovProblem(Ahat, Qhat / 2 + K.T @ R @ K))
    except ResonantSpectrumError:
        return None


def is_hurwitz(Ahat):
    """ True iff P A + A^T P = -I has a positive definite solution. """
    try:
        P = lyapunov_solve(LyapunovProblem(Ahat, np.eye(np.atleast_2d(Ahat).shape[0])))
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        return False
    return True


def kleinman(A, B, Qhat, Rhat, K0, max_iters=100, tol=1e-10):
    """
    Kleinman's iteration for the stabilizing solution of A^T P + P A - P B R^-1 B^T P + Q = 0.

    :param K0: Initial gain, A + B K0 must be Hurwitz.
    :return: (P, K) with K = -R^-1 B^T P.
    :raises NotHurwitzError: if a closed loop A + B K_i is not Hurwitz.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    Qhat = np.atleast_2d(np.asarray(Qhat, dtype=np.float64))
    Rhat = np.atleast_2d(np.asarray(Rhat, dtype=np.float64))
    K = np.atleast_2d(np.asarray(K0, dtype=np.float64))

    P_prev = None
    for i in range(max_iters):
        Ahat = A + B @ K
        if not is_hurwitz(Ahat):
            raise NotHurwitzError(i, f'Kleinman iteration {i}: closed loop A + B K is not Hurwitz.')
        P = lyapunov_solve(LyapunovProblem(Ahat, Qhat + K.T @ Rhat @ K))
        if P_prev is not None and np.min(np.linalg.eigvalsh(P_prev - P)) < -1e-10 * max(1.0, np.linalg.norm(P)):
            logging.warning(f'Kleinman iteration {i}: value matrices are not monotonically decreasing.')
        K_next = gain_update(P, B, Rhat)
        change = np.linalg.norm(K_next - K)
        K, P_prev = K_next, P
        if change < tol:
            logging.debug(f'Kleinman converged after {i + 1} iterations.')
            return P, K
    logging.warning(f'Kleinman did not reach tolerance {tol} in {max_iters} iterations (last change {change:.3e}).')
    return P_prev, K
