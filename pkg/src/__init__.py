# Tubes about curves in 3-manifolds
