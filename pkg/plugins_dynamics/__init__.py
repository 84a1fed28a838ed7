# Dynamics backend plugins: unitary, weak_coupling, polaron
