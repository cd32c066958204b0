# This file makes 'ui' a sub-package of 'airsindy'.
