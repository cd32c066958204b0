# This file makes 'agent' a sub-package of 'airsindy'.
