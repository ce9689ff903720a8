a = 0x_FF + 0o17 + 0b1010 + 1_000_000
b = 3.14 + .5 + 1e10 + 2.5E-3 + 7j + 1.j
c = [1, 2,
     3, 4]  # trailing comment
d = {'k': b'bytes', "r": r'\d+', 'u': u'text', "rb": Rb"\x00"}
e = a if b else c
f = lambda x, *args, **kw: x ** 2 // 3 % 4
g = x @ y
h >>= 2; h <<= 1; h **= 3; h //= 2
i = not a and b or c is not None
print(e[1:2], f(3), ..., sep='')
