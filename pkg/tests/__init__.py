# Great things go unoticed
