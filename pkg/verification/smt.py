"""
SMT-LIB export of the negated decrease condition, for cross-checking verification results with an external
delta-complete solver.

The query is satisfiable exactly when some x in the domain, outside the infinity-norm ball of radius epsilon, has
DV(x) (f(x) + g(x) kappa(x)) >= -mu. Terms are built as nested lists and serialized at the end.
"""
import logging

import numpy as np
import sympy

from network import Activation, ValueNet


class SymbolicNamespace:
    """ Array namespace over numpy object arrays of sympy expressions, used to trace system definitions. """

    @staticmethod
    def _map(fn, x):
        return np.vectorize(fn, otypes=[object])(x)

    def stack(self, items, axis=-1):
        return np.stack([np.asarray(item, dtype=object) for item in items], axis=axis)

    def sum(self, x, axis=None):
        return np.sum(np.asarray(x, dtype=object), axis=axis)

    def broadcast_to(self, x, shape):
        return np.broadcast_to(np.asarray(x, dtype=object), shape)

    def sin(self, x):
        return self._map(sympy.sin, x)

    def cos(self, x):
        return self._map(sympy.cos, x)

    def exp(self, x):
        return self._map(sympy.exp, x)

    def tanh(self, x):
        return self._map(sympy.tanh, x)

    def sech2(self, x):
        return self._map(lambda v: 1 - sympy.tanh(v) ** 2, x)

    def abs(self, x):
        return self._map(sympy.Abs, x)

    def sign(self, x):
        return self._map(sympy.sign, x)

    def minimum(self, x, y):
        return np.vectorize(sympy.Min, otypes=[object])(x, y)

    def maximum(self, x, y):
        return np.vectorize(sympy.Max, otypes=[object])(x, y)


symbolic = SymbolicNamespace()


# region Terms ---------------------------------------------------------------------------------------------------------

def number(value):
    """ Decimal literal of a float, exact to the last bit through the shortest round-trip representation. """
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f'Cannot export the non-finite constant {value}.')
    text = np.format_float_positional(abs(value), unique=True, trim='0')
    return ['-', text] if value < 0 else text


def tanh_term(argument):
    return ['-', '1.0', ['/', '2.0', ['+', ['exp', ['*', '2.0', argument]], '1.0']]]


def term(expr):
    """ Converts a sympy expression into a nested-list SMT term. """
    if isinstance(expr, (int, float, np.floating, np.integer)):
        return number(expr)
    expr = sympy.sympify(expr)
    if expr.is_Symbol:
        return expr.name
    if expr.is_Integer:
        return ['-', str(-int(expr))] if expr < 0 else str(int(expr))
    if expr.is_Rational:
        return ['/', term(expr.p), term(expr.q)]
    if expr.is_Float:
        return number(float(expr))
    if expr.is_Add:
        return ['+'] + [term(a) for a in expr.as_ordered_terms()]
    if expr.is_Mul:
        return ['*'] + [term(a) for a in expr.as_ordered_factors()]
    if expr.is_Pow:
        base, exponent = expr.args
        if exponent.is_Integer and exponent != 0:
            k = int(exponent)
            product = term(base) if abs(k) == 1 else ['*'] + [term(base)] * abs(k)
            return product if k > 0 else ['/', '1.0', product]
        if base == sympy.E:
            return ['exp', term(exponent)]
        raise ValueError(f'Unsupported power in SMT export: {expr}')
    if isinstance(expr, sympy.tanh):
        return tanh_term(term(expr.args[0]))
    if isinstance(expr, (sympy.sin, sympy.cos, sympy.exp)):
        return [type(expr).__name__, term(expr.args[0])]
    if isinstance(expr, sympy.Abs):
        a = term(expr.args[0])
        return ['ite', ['>=', a, '0.0'], a, ['-', a]]
    if isinstance(expr, sympy.sign):
        a = term(expr.args[0])
        return ['ite', ['>', a, '0.0'], '1.0', ['ite', ['<', a, '0.0'], ['-', '1.0'], '0.0']]
    if isinstance(expr, (sympy.Min, sympy.Max)):
        a, b = (term(arg) for arg in expr.args[:2])
        return ['ite', ['<=' if isinstance(expr, sympy.Min) else '>=', a, b], a, b]
    raise ValueError(f'Unsupported expression in SMT export: {expr}')


def serialize(command):
    if isinstance(command, list):
        return '(' + ' '.join(serialize(c) for c in command) + ')'
    return str(command)


def _linear(coefficients, names, offset=None):
    parts = [['*', number(c), name] for c, name in zip(coefficients, names)]
    if offset is not None:
        parts.append(number(offset))
    return ['+'] + parts if len(parts) > 1 else parts[0]


# endregion

def export_smt_query(system, net, spec):
    """
    SMT-LIB text asserting the negation of the decrease condition over the domain minus U_eps.

    :raises ValueError: for specs outside decrease_only mode.
    """
    if spec.mode != 'decrease_only':
        raise ValueError('SMT export is only available for the decrease condition.')
    n, m = system.state_dim, system.input_dim
    names = [f'x{i + 1}' for i in range(n)]
    x = np.array(sympy.symbols(' '.join(names), real=True), dtype=object).reshape(n)
    commands = [['set-logic', 'QF_NRA']]
    commands += [['declare-fun', name, [], 'Real'] for name in names]

    # region VALUE GRADIENT --------------------------------------------------------------------------------------------
    if isinstance(net, ValueNet):
        for j in range(net.width):
            commands.append(['define-fun', f'z{j + 1}', [], 'Real', _linear(net.W[j], names, net.b[j])])
            if net.activation is Activation.TANH:
                commands.append(['define-fun', f't{j + 1}', [], 'Real', tanh_term(f'z{j + 1}')])
                sech2 = ['-', '1.0', ['*', f't{j + 1}', f't{j + 1}']]
                commands.append(['define-fun', f's{j + 1}', [], 'Real', sech2])
            else:
                step = ['ite', ['>', f'z{j + 1}', '0.0'], '1.0', '0.0']
                commands.append(['define-fun', f's{j + 1}', [], 'Real', step])
        for k in range(n):
            parts = [['*', number(net.beta[j] * net.W[j, k]), f's{j + 1}'] for j in range(net.width)]
            commands.append(['define-fun', f'dv{k + 1}', [], 'Real', ['+'] + parts if len(parts) > 1 else parts[0]])
    else:
        gradient = np.broadcast_to(np.asarray(net.gradient(x, xp=symbolic), dtype=object), (n,))
        for k in range(n):
            commands.append(['define-fun', f'dv{k + 1}', [], 'Real', term(gradient[k])])
    # endregion

    # region CLOSED LOOP -----------------------------------------------------------------------------------------------
    dv = np.array(sympy.symbols(' '.join(f'dv{k + 1}' for k in range(n)), real=True), dtype=object).reshape(n)
    if system.g_const is not None:
        g = np.asarray(system.g_const, dtype=object)
    else:
        g = np.asarray(system.g(x, symbolic), dtype=object).reshape(n, m)
    drift = np.asarray(system.f(x, symbolic), dtype=object).reshape(n)
    y = g.T @ dv
    u = [sum(-0.5 * float(system.R_inv[i, k]) * y[k] for k in range(m)) for i in range(m)]
    closed = [drift[k] + sum(g[k, i] * u[i] for i in range(m)) for k in range(n)]
    dvdot = sympy.expand(sum(dv[k] * closed[k] for k in range(n)))
    commands.append(['define-fun', 'dvdot', [], 'Real', term(dvdot)])
    # endregion

    box = ['and'] + [c for i, name in enumerate(names)
                     for c in (['<=', number(system.lower[i]), name], ['<=', name, number(system.upper[i])])]
    outside = ['or'] + [c for name in names
                        for c in (['>', name, number(spec.epsilon)], ['<', name, number(-spec.epsilon)])]
    commands += [['assert', box], ['assert', outside], ['assert', ['>=', 'dvdot', number(-spec.mu)]],
                 ['check-sat'], ['exit']]

    header = f'; {system.name}: DV (f + g kappa) >= -mu outside U_eps, mu={spec.mu} epsilon={spec.epsilon}\n'
    text = header + '\n'.join(serialize(c) for c in commands) + '\n'
    logging.debug(f'SMT query for {system.name}: {len(commands)} commands.')
    return text
